//! Unitary-frame geometry of the built-in models.
//!
//! A model supplies, at every chart point, a unitary frame `e_1..e_{2n}`
//! (`e_j = ê_j`, `e_{j+n} = f_j`), the connection one-form `u_μ` with
//! `∇_X e_i = X^μ u_{μ ij} e_j`, and a quadrature rule. From these it derives
//! torsion, curvature, the Levi-Civita scalars and the integrated invariants
//! used by the heat coefficients.
//!
//! Built-in models carry analytic derivatives. [`ModelKind::SampledGrid`]
//! wraps a built-in and replaces every derivative by a central difference
//! whose step is tied to the grid spacing.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::unrep::{complex_structure, defining_cartan, UnAlgebraElement};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Flat torus `ℝ^{2n} / ⊕ L_μ ℤ` with the coordinate frame and `u = 0`.
    FlatTorus { periods: Vec<f64> },
    /// Round 2-sphere of the given radius with its Levi-Civita connection.
    RoundSphere { radius: f64 },
    /// Flat torus with a constant, generally torsionful, connection.
    TwistedFlat {
        periods: Vec<f64>,
        connection: Vec<UnAlgebraElement>,
    },
    /// A built-in model whose derivatives are taken by central differences.
    SampledGrid { base: Box<ModelKind> },
}

impl ModelKind {
    pub fn cp1() -> Self {
        Self::RoundSphere { radius: 0.5 }
    }

    /// Twisted flat torus with unit periods and random constant `u_μ`.
    pub fn random_twisted(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::TwistedFlat {
            periods: vec![1.0; 2 * n],
            connection: (0..2 * n)
                .map(|_| UnAlgebraElement::random(n, &mut rng))
                .collect(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::FlatTorus { periods } | Self::TwistedFlat { periods, .. } => periods.len(),
            Self::RoundSphere { .. } => 2,
            Self::SampledGrid { base } => base.dim(),
        }
    }

    fn name(&self) -> String {
        match self {
            Self::FlatTorus { .. } => "flat-torus".into(),
            Self::RoundSphere { .. } => "round-sphere".into(),
            Self::TwistedFlat { .. } => "twisted-flat".into(),
            Self::SampledGrid { base } => format!("sampled-{}", base.name()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::FlatTorus { periods } => check_periods(periods),
            Self::RoundSphere { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(format!("sphere radius {radius}")));
                }
                Ok(())
            }
            Self::TwistedFlat { periods, connection } => {
                check_periods(periods)?;
                if connection.len() != periods.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} connection components for dimension {}",
                        connection.len(),
                        periods.len()
                    )));
                }
                let n = periods.len() / 2;
                if let Some(bad) = connection.iter().find(|u| u.n() != n) {
                    return Err(Error::DimensionMismatch(format!(
                        "u({}) component on a {}-dimensional torus",
                        bad.n(),
                        2 * n
                    )));
                }
                Ok(())
            }
            Self::SampledGrid { base } => match **base {
                Self::SampledGrid { .. } => Err(Error::UnsupportedModel("nested sampled grids".into())),
                ref b => b.validate(),
            },
        }
    }
}

fn check_periods(periods: &[f64]) -> Result<()> {
    if periods.is_empty() || !periods.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "torus needs an even, positive number of periods, got {}",
            periods.len()
        )));
    }
    if let Some(p) = periods.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!("torus period {p}")));
    }
    Ok(())
}

/// Quadrature node in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub coords: Vec<f64>,
    pub weight: f64,
}

/// `T(e_i, e_j) = Σ_m t(i,j,m) e_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionTensor {
    dim: usize,
    data: Vec<f64>,
}

impl TorsionTensor {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, m: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + m]
    }

    fn set(&mut self, i: usize, j: usize, m: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + m] = v;
    }

    pub fn vector(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.dim).map(|m| self.get(i, j, m)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// `𝔗 = Σ_j T(ê_j, f_j)`.
    pub fn trace_vector(&self) -> Vec<f64> {
        let n = self.dim / 2;
        (0..self.dim)
            .map(|m| (0..n).map(|j| self.get(j, j + n, m)).sum())
            .collect()
    }

    /// `τ(e_x) = Σ_k g(T(e_k, e_x), e_k)`.
    pub fn tau(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|x| (0..self.dim).map(|k| self.get(k, x, k)).sum())
            .collect()
    }

    /// `Σ_{ij} g(T(e_i,e_j), T(e_i,e_j))`.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// `Σ_{ij} g(T(T(e_i,e_j), e_j), e_i)`.
    pub fn cubic(&self) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for m in 0..d {
                    s += self.get(i, j, m) * self.get(m, j, i);
                }
            }
        }
        s
    }

    pub fn scaled_difference(&self, other: &Self, scale: f64) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b) * scale)
                .collect(),
        }
    }
}

/// `R(e_i, e_j) e_k = Σ_m r(i,j,k,m) e_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    dim: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        let d = self.dim;
        self.data[((i * d + j) * d + k) * d + m]
    }

    /// The endomorphism `R(e_i, e_j)` as the matrix `[k][m]`.
    pub fn endomorphism(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |k, m| self.get(i, j, k, m))
    }

    /// `Σ_{jk} g(R(e_j,e_k)e_j, e_k)`.
    pub fn full_trace(&self) -> f64 {
        let d = self.dim;
        (0..d)
            .flat_map(|j| (0..d).map(move |k| (j, k)))
            .map(|(j, k)| self.get(j, k, j, k))
            .sum()
    }

    /// `Σ_{ij} g(R(ê_i,f_i)ê_j, f_j)`.
    pub fn kahler_trace(&self) -> f64 {
        let n = self.dim / 2;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.get(i, i + n, j, j + n);
            }
        }
        s
    }
}

/// Levi-Civita curvature scalars at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcScalars {
    pub rho: f64,
    pub ric_sq: f64,
    pub riem_sq: f64,
}

/// Integrated invariants of a model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantIntegrals {
    pub volume: f64,
    /// `∫ρ̄`
    pub rho: f64,
    /// `∫ρ̄²`
    pub rho_sq: f64,
    /// `∫Ric²` (Levi-Civita)
    pub ric_sq: f64,
    /// `∫Riem²` (Levi-Civita)
    pub riem_sq: f64,
    /// `∫Σ_{ij} g(R(ê_i,f_i)ê_j,f_j)`
    pub kahler_curvature: f64,
    /// `∫g(𝔗,𝔗)`
    pub torsion_trace_sq: f64,
    /// `∫Σ g(T(e_i,e_j),T(e_i,e_j))`
    pub torsion_sq: f64,
    /// `∫Σ g(T(T(e_i,e_j),e_j),e_i)`
    pub torsion_cubic: f64,
    /// `∫Σ τ(e_j)²`
    pub tau_sq: f64,
}

impl InvariantIntegrals {
    pub fn torsion_free(&self, tol: f64) -> bool {
        [
            self.torsion_trace_sq,
            self.torsion_sq,
            self.torsion_cubic,
            self.tau_sq,
        ]
        .iter()
        .all(|x| x.abs() <= tol)
    }
}

/// Both sides of the curvature-trace identity at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrhoSample {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrhoReport {
    /// Largest pointwise `|lhs − rhs|`.
    pub max_residual: f64,
    /// `|∫(lhs − rhs)|`.
    pub integrated_residual: f64,
    /// `∫lhs`
    pub lhs_integral: f64,
}

/// A sampled almost-hermitian geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryModel {
    kind: ModelKind,
    resolution: usize,
    points: Vec<SamplePoint>,
}

impl GeometryModel {
    /// Build a model with `resolution` quadrature nodes per coordinate
    /// (`resolution × 2·resolution` on the sphere).
    pub fn new(kind: ModelKind, resolution: usize) -> Result<Self> {
        kind.validate()?;
        if resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        let points = quadrature(&kind, resolution);
        Ok(Self {
            kind,
            resolution,
            points,
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        self.kind.name()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn n(&self) -> usize {
        self.dim() / 2
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    /// True for models that are torsion-free by construction.
    pub fn is_kahler(&self) -> bool {
        match &self.kind {
            ModelKind::FlatTorus { .. } | ModelKind::RoundSphere { .. } => true,
            ModelKind::TwistedFlat { .. } => false,
            ModelKind::SampledGrid { base } => !matches!(**base, ModelKind::TwistedFlat { .. }),
        }
    }

    fn analytic(&self) -> &ModelKind {
        match &self.kind {
            ModelKind::SampledGrid { base } => base,
            k => k,
        }
    }

    /// Whether the connection has vanishing torsion everywhere.
    pub fn is_torsion_free(&self) -> bool {
        match self.analytic() {
            ModelKind::TwistedFlat { .. } => self
                .torsion_tensor(&vec![0.0; self.dim()])
                .map(|t| t.max_abs() == 0.0)
                .unwrap_or(false),
            _ => true,
        }
    }

    /// Difference steps per coordinate, `None` for analytic models.
    /// Nested fourth-order stencils reach `4·step`, well inside the half-cell
    /// between the sphere grid and its poles. The step shrinks like `h²` so
    /// the stencil error on the pole rows is still `O(h²)`.
    fn fd_steps(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::SampledGrid { base } => Some(
                grid_spacing(base, self.resolution)
                    .iter()
                    .map(|h| h * h.min(1.0) / 16.0)
                    .collect(),
            ),
            _ => None,
        }
    }

    fn check_coords(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point with {} coordinates on a {}-dimensional model",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Columns are the frame vectors `e_i` in chart coordinates.
    pub fn frame(&self, x: &[f64]) -> DMatrix<f64> {
        match self.analytic() {
            ModelKind::RoundSphere { radius } => {
                let mut f = DMatrix::zeros(2, 2);
                f[(0, 0)] = 1.0 / radius;
                f[(1, 1)] = 1.0 / (radius * x[0].sin());
                f
            }
            k => DMatrix::identity(k.dim(), k.dim()),
        }
    }

    /// Rows are the dual coframe `θ^i` in chart coordinates.
    pub fn coframe(&self, x: &[f64]) -> DMatrix<f64> {
        self.frame(x)
            .try_inverse()
            .expect("frame is invertible away from the poles")
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let c = self.coframe(x);
        c.transpose() * c
    }

    /// `u_μ` as a `2n × 2n` matrix.
    pub fn connection(&self, x: &[f64], mu: usize) -> DMatrix<f64> {
        match self.analytic() {
            ModelKind::RoundSphere { .. } => {
                if mu == 1 {
                    defining_cartan(1, 0).expect("n=1").matrix() * x[0].cos()
                } else {
                    DMatrix::zeros(2, 2)
                }
            }
            ModelKind::TwistedFlat { connection, .. } => connection[mu].matrix().clone(),
            k => DMatrix::zeros(k.dim(), k.dim()),
        }
    }

    /// `u(e_i) = e_i^μ u_μ`.
    pub fn connection_along_frame(&self, x: &[f64], i: usize) -> DMatrix<f64> {
        let e = self.frame(x);
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for mu in 0..d {
            if e[(mu, i)] != 0.0 {
                acc += self.connection(x, mu) * e[(mu, i)];
            }
        }
        acc
    }

    fn shifted(x: &[f64], mu: usize, h: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        y[mu] += h;
        y
    }

    /// Fourth-order central difference of `f` along coordinate `mu`.
    fn diff<F>(x: &[f64], mu: usize, h: f64, f: F) -> Result<DMatrix<f64>>
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>>,
    {
        let at = |k: f64| f(&Self::shifted(x, mu, k * h));
        Ok((at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h))
    }

    /// `∂_ν u_μ`.
    fn connection_derivative(&self, x: &[f64], nu: usize, mu: usize) -> DMatrix<f64> {
        if let Some(h) = self.fd_steps() {
            return Self::diff(x, nu, h[nu], |y| Ok(self.connection(y, mu))).expect("infallible");
        }
        match self.analytic() {
            ModelKind::RoundSphere { .. } if nu == 0 && mu == 1 => {
                defining_cartan(1, 0).expect("n=1").matrix() * (-x[0].sin())
            }
            k => DMatrix::zeros(k.dim(), k.dim()),
        }
    }

    /// `∂_ν` of the frame matrix.
    fn frame_derivative(&self, x: &[f64], nu: usize) -> DMatrix<f64> {
        if let Some(h) = self.fd_steps() {
            return Self::diff(x, nu, h[nu], |y| Ok(self.frame(y))).expect("infallible");
        }
        match self.analytic() {
            ModelKind::RoundSphere { radius } if nu == 0 => {
                let mut d = DMatrix::zeros(2, 2);
                let s = x[0].sin();
                d[(1, 1)] = -x[0].cos() / (radius * s * s);
                d
            }
            k => DMatrix::zeros(k.dim(), k.dim()),
        }
    }

    /// Frame components of `[e_i, e_j]`.
    pub fn frame_bracket(&self, x: &[f64], i: usize, j: usize) -> Vec<f64> {
        let d = self.dim();
        let e = self.frame(x);
        let mut br = DVector::zeros(d);
        for nu in 0..d {
            if e[(nu, i)] == 0.0 && e[(nu, j)] == 0.0 {
                continue;
            }
            let de = self.frame_derivative(x, nu);
            for rho in 0..d {
                br[rho] += e[(nu, i)] * de[(rho, j)] - e[(nu, j)] * de[(rho, i)];
            }
        }
        (self.coframe(x) * br).iter().copied().collect()
    }

    /// `T(e_i,e_j) = u(e_i)e_j − u(e_j)e_i − [e_i,e_j]` for all `i, j`.
    pub fn torsion_tensor(&self, x: &[f64]) -> Result<TorsionTensor> {
        self.check_coords(x)?;
        let d = self.dim();
        let ui: Vec<DMatrix<f64>> = (0..d).map(|i| self.connection_along_frame(x, i)).collect();
        let mut t = TorsionTensor::zeros(d);
        for i in 0..d {
            for j in i + 1..d {
                let br = self.frame_bracket(x, i, j);
                for m in 0..d {
                    let v = ui[i][(j, m)] - ui[j][(i, m)] - br[m];
                    t.set(i, j, m, v);
                    t.set(j, i, m, -v);
                }
            }
        }
        Ok(t)
    }

    /// Frame components of `T(e_i, e_j)`.
    pub fn torsion(&self, x: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.torsion_tensor(x)?.vector(i, j))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::AxisOutOfRange {
                axis: i,
                n: self.dim(),
            });
        }
        Ok(())
    }

    /// Directional derivative of the torsion tensor along `v` (chart
    /// components), by central differences in every mode.
    pub fn torsion_derivative(&self, x: &[f64], v: &[f64]) -> Result<TorsionTensor> {
        let h = self
            .fd_steps()
            .map(|s| s.iter().cloned().fold(f64::INFINITY, f64::min))
            .unwrap_or(1e-4);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        let step = h / norm;
        let at = |k: f64| -> Result<TorsionTensor> {
            let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + k * step * b).collect();
            self.torsion_tensor(&y)
        };
        let (t2, t1, tm1, tm2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        let data = (0..t1.data.len())
            .map(|k| (8.0 * (t1.data[k] - tm1.data[k]) - t2.data[k] + tm2.data[k]) / (12.0 * step))
            .collect();
        Ok(TorsionTensor { dim: t1.dim, data })
    }

    /// `F_{μν} = −∂_μu_ν + ∂_νu_μ + [u_μ,u_ν]`.
    pub fn field_strength(&self, x: &[f64], mu: usize, nu: usize) -> DMatrix<f64> {
        let um = self.connection(x, mu);
        let un = self.connection(x, nu);
        -self.connection_derivative(x, mu, nu) + self.connection_derivative(x, nu, mu) + &um * &un - &un * &um
    }

    /// `R(e_i,e_j)e_k = e_i^ν e_j^μ F_{μν km} e_m`.
    pub fn curvature_tensor(&self, x: &[f64]) -> Result<CurvatureTensor> {
        self.check_coords(x)?;
        let d = self.dim();
        let e = self.frame(x);
        let f: Vec<Vec<DMatrix<f64>>> = (0..d)
            .map(|mu| (0..d).map(|nu| self.field_strength(x, mu, nu)).collect())
            .collect();
        let mut data = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                let mut r = DMatrix::<f64>::zeros(d, d);
                for mu in 0..d {
                    for nu in 0..d {
                        let c = e[(nu, i)] * e[(mu, j)];
                        if c != 0.0 {
                            r += &f[mu][nu] * c;
                        }
                    }
                }
                for k in 0..d {
                    for m in 0..d {
                        data[((i * d + j) * d + k) * d + m] = r[(k, m)];
                    }
                }
            }
        }
        Ok(CurvatureTensor { dim: d, data })
    }

    /// The endomorphism `R(e_i, e_j)`.
    pub fn curvature(&self, x: &[f64], i: usize, j: usize) -> Result<DMatrix<f64>> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.curvature_tensor(x)?.endomorphism(i, j))
    }

    /// Levi-Civita scalar curvature, `|Ric|²` and `|Riem|²`.
    pub fn lc_scalars(&self, x: &[f64]) -> LcScalars {
        if self.fd_steps().is_some() {
            return self.lc_scalars_fd(x);
        }
        match self.analytic() {
            ModelKind::RoundSphere { radius } => {
                let rho = 2.0 / (radius * radius);
                LcScalars {
                    rho,
                    ric_sq: rho * rho / 2.0,
                    riem_sq: rho * rho,
                }
            }
            _ => LcScalars {
                rho: 0.0,
                ric_sq: 0.0,
                riem_sq: 0.0,
            },
        }
    }

    fn christoffel(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let ginv = self.metric(x).try_inverse().expect("metric invertible");
        let dg: Vec<DMatrix<f64>> = (0..d)
            .map(|mu| Self::diff(x, mu, h[mu], |y| Ok(self.metric(y))).expect("infallible"))
            .collect();
        // Γ^k_{ij} at index (k*d + i)*d + j
        let mut gam = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gam[(k * d + i) * d + j] = 0.5 * s;
                }
            }
        }
        gam
    }

    fn lc_scalars_fd(&self, x: &[f64]) -> LcScalars {
        let d = self.dim();
        let h = self.fd_steps().expect("sampled model");
        let g = |k: usize, i: usize, j: usize, gam: &[f64]| gam[(k * d + i) * d + j];
        let gam = self.christoffel(x, &h);
        let dgam: Vec<Vec<f64>> = (0..d)
            .map(|mu| {
                Self::diff(x, mu, h[mu], |y| {
                    let g = self.christoffel(y, &h);
                    Ok(DMatrix::from_vec(g.len(), 1, g))
                })
                .expect("infallible")
                .as_slice()
                .to_vec()
            })
            .collect();
        // R^ρ_{σμν}
        let idx = |r: usize, s: usize, m: usize, n: usize| ((r * d + s) * d + m) * d + n;
        let mut riem = vec![0.0; d * d * d * d];
        for r in 0..d {
            for s in 0..d {
                for m in 0..d {
                    for n in 0..d {
                        let mut v = g(r, n, s, &dgam[m]) - g(r, m, s, &dgam[n]);
                        for l in 0..d {
                            v += g(r, m, l, &gam) * g(l, n, s, &gam) - g(r, n, l, &gam) * g(l, m, s, &gam);
                        }
                        riem[idx(r, s, m, n)] = v;
                    }
                }
            }
        }
        // orthonormal components R_{abcd} = θ^a_ρ e_b^σ e_c^μ e_d^ν R^ρ_{σμν}
        let e = self.frame(x);
        let th = self.coframe(x);
        let mut frame_riem = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mut v = 0.0;
                        for r in 0..d {
                            for s in 0..d {
                                for m in 0..d {
                                    for n in 0..d {
                                        v += th[(a, r)]
                                            * e[(s, b)]
                                            * e[(m, c)]
                                            * e[(n, dd)]
                                            * riem[idx(r, s, m, n)];
                                    }
                                }
                            }
                        }
                        frame_riem[idx(a, b, c, dd)] = v;
                    }
                }
            }
        }
        let mut ric = DMatrix::<f64>::zeros(d, d);
        for b in 0..d {
            for c in 0..d {
                ric[(b, c)] = (0..d).map(|a| frame_riem[idx(a, b, a, c)]).sum();
            }
        }
        LcScalars {
            rho: ric.trace(),
            ric_sq: ric.iter().map(|v| v * v).sum(),
            riem_sq: frame_riem.iter().map(|v| v * v).sum(),
        }
    }

    /// Levi-Civita divergence of the torsion covector `τ`.
    pub fn div_tau(&self, x: &[f64]) -> Result<f64> {
        // analytic models have constant or vanishing torsion in a coordinate-constant frame
        let Some(h) = self.fd_steps() else {
            return Ok(0.0);
        };
        let d = self.dim();
        // (1/√g) ∂_μ (√g g^{μν} τ_ν)
        let flux = |y: &[f64]| -> Result<DVector<f64>> {
            let tau = DVector::from_vec(self.torsion_tensor(y)?.tau());
            let g = self.metric(y);
            let sqrt_g = g.determinant().abs().sqrt();
            let tau_coord = self.coframe(y).transpose() * tau;
            Ok(g.try_inverse().expect("metric invertible") * tau_coord * sqrt_g)
        };
        let mut s = 0.0;
        for mu in 0..d {
            let dflux = Self::diff(x, mu, h[mu], |y| {
                let v = flux(y)?;
                Ok(DMatrix::from_column_slice(d, 1, v.as_slice()))
            })?;
            s += dflux[mu];
        }
        Ok(s / self.metric(x).determinant().abs().sqrt())
    }

    /// Both sides of
    /// `Σ g(R(e_j,e_k)e_j,e_k) = −ρ̄ + 2 div τ + Σ τ_j² − ¼ Σ [2 g(T(T(e_j,e_l),e_l),e_j) + |T(e_j,e_l)|²]`.
    pub fn rrho_sample(&self, x: &[f64]) -> Result<RrhoSample> {
        let r = self.curvature_tensor(x)?;
        let t = self.torsion_tensor(x)?;
        let tau_sq: f64 = t.tau().iter().map(|v| v * v).sum();
        let rhs = -self.lc_scalars(x).rho + 2.0 * self.div_tau(x)? + tau_sq
            - 0.25 * (2.0 * t.cubic() + t.norm_sq());
        Ok(RrhoSample {
            lhs: r.full_trace(),
            rhs,
        })
    }

    pub fn check_rrho(&self) -> Result<RrhoReport> {
        let mut max_residual = 0.0_f64;
        let mut diff = Vec::with_capacity(self.points.len());
        let mut lhs = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let s = self.rrho_sample(&p.coords)?;
            max_residual = max_residual.max((s.lhs - s.rhs).abs());
            diff.push(p.weight * (s.lhs - s.rhs));
            lhs.push(p.weight * s.lhs);
        }
        Ok(RrhoReport {
            max_residual,
            integrated_residual: pairwise_sum(&diff).abs(),
            lhs_integral: pairwise_sum(&lhs),
        })
    }

    pub fn torsion_invariants(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.torsion_tensor(x)?;
        Ok((t.trace_vector(), t.tau()))
    }

    pub fn invariant_integrals(&self) -> Result<InvariantIntegrals> {
        let cols = 10;
        let mut samples: Vec<Vec<f64>> = (0..cols).map(|_| Vec::with_capacity(self.points.len())).collect();
        for p in &self.points {
            let x = &p.coords;
            let w = p.weight;
            let lc = self.lc_scalars(x);
            let r = self.curvature_tensor(x)?;
            let t = self.torsion_tensor(x)?;
            let tt = t.trace_vector();
            let vals = [
                1.0,
                lc.rho,
                lc.rho * lc.rho,
                lc.ric_sq,
                lc.riem_sq,
                r.kahler_trace(),
                tt.iter().map(|v| v * v).sum(),
                t.norm_sq(),
                t.cubic(),
                t.tau().iter().map(|v| v * v).sum(),
            ];
            for (c, v) in samples.iter_mut().zip(vals) {
                c.push(w * v);
            }
        }
        let s: Vec<f64> = samples.iter().map(|c| pairwise_sum(c)).collect();
        Ok(InvariantIntegrals {
            volume: s[0],
            rho: s[1],
            rho_sq: s[2],
            ric_sq: s[3],
            riem_sq: s[4],
            kahler_curvature: s[5],
            torsion_trace_sq: s[6],
            torsion_sq: s[7],
            torsion_cubic: s[8],
            tau_sq: s[9],
        })
    }

    /// Largest violation of the unitary-frame relations `g(e_i,e_j) = δ_ij`,
    /// `ω(ê_i,f_j) = δ_ij`, `ω(ê_i,ê_j) = ω(f_i,f_j) = 0`, `g(X,Y) = ω(X,JY)`
    /// and of the `u(n)` constraints on the connection, over all nodes.
    pub fn frame_defect(&self) -> f64 {
        let d = self.dim();
        let j = complex_structure(self.n());
        // ω in frame components is J^{-T}: ω(e_a, e_b) = −J_{ab}
        let omega = -j.clone();
        let mut worst = 0.0_f64;
        for p in &self.points {
            let e = self.frame(&p.coords);
            let gram = e.transpose() * self.metric(&p.coords) * &e;
            worst = worst.max((gram - DMatrix::<f64>::identity(d, d)).amax());
            // g(X,Y) = ω(X,JY) on frame vectors
            worst = worst.max((&omega * &j - DMatrix::<f64>::identity(d, d)).amax());
            for mu in 0..d {
                let u = self.connection(&p.coords, mu);
                worst = worst.max((&u + u.transpose()).amax());
                worst = worst.max((&u * &j - &j * &u).amax());
            }
        }
        worst
    }
}

/// Grid spacing per coordinate used by the quadrature and sampled derivatives.
fn grid_spacing(kind: &ModelKind, resolution: usize) -> Vec<f64> {
    match kind {
        ModelKind::RoundSphere { .. } => vec![PI / resolution as f64, PI / resolution as f64],
        ModelKind::FlatTorus { periods } | ModelKind::TwistedFlat { periods, .. } => {
            periods.iter().map(|p| p / resolution as f64).collect()
        }
        ModelKind::SampledGrid { base } => grid_spacing(base, resolution),
    }
}

fn quadrature(kind: &ModelKind, resolution: usize) -> Vec<SamplePoint> {
    match kind {
        ModelKind::RoundSphere { radius } => {
            // offset latitude rows, exact band areas
            let nt = resolution;
            let np = 2 * resolution;
            let ht = PI / nt as f64;
            let hp = 2.0 * PI / np as f64;
            let mut pts = Vec::with_capacity(nt * np);
            for i in 0..nt {
                let th = (i as f64 + 0.5) * ht;
                let band = radius * radius * hp * ((th - ht / 2.0).cos() - (th + ht / 2.0).cos());
                for j in 0..np {
                    pts.push(SamplePoint {
                        coords: vec![th, j as f64 * hp],
                        weight: band,
                    });
                }
            }
            pts
        }
        ModelKind::FlatTorus { periods } | ModelKind::TwistedFlat { periods, .. } => {
            let d = periods.len();
            let cell: f64 = periods.iter().map(|p| p / resolution as f64).product();
            let total = resolution.pow(d as u32);
            (0..total)
                .map(|mut idx| {
                    let coords = periods
                        .iter()
                        .map(|p| {
                            let k = idx % resolution;
                            idx /= resolution;
                            (k as f64 + 0.5) * p / resolution as f64
                        })
                        .collect();
                    SamplePoint { coords, weight: cell }
                })
                .collect()
        }
        ModelKind::SampledGrid { base } => quadrature(base, resolution),
    }
}

/// Recursive pairwise summation, deterministic in the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Model description as read from a configuration file.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelPreset {
    pub kind: String,
    pub radius: Option<f64>,
    pub periods: Option<Vec<f64>>,
    pub resolution: Option<usize>,
    /// One row-major `2n × 2n` matrix per coordinate direction.
    pub connection: Option<Vec<Vec<f64>>>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

impl ModelPreset {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolve a preset by name: `cp1`, `sphere`, `torus`, `twisted`,
    /// `sampled-sphere`, `sampled-torus`.
    pub fn named(name: &str) -> Result<Self> {
        let base = Self {
            kind: name.to_string(),
            radius: None,
            periods: None,
            resolution: None,
            connection: None,
            n: None,
            seed: None,
        };
        match name {
            "cp1" | "sphere" | "torus" | "twisted" | "sampled-sphere" | "sampled-torus" => Ok(base),
            other => Err(Error::Config(format!("unknown model preset '{other}'"))),
        }
    }

    pub fn build(&self) -> Result<GeometryModel> {
        let kind = self.kind()?;
        let default_res = if kind.dim() > 2 { 2 } else { 16 };
        GeometryModel::new(kind, self.resolution.unwrap_or(default_res))
    }

    pub fn kind(&self) -> Result<ModelKind> {
        let n = self.n.unwrap_or(1);
        let periods = || self.periods.clone().unwrap_or_else(|| vec![1.0; 2 * n]);
        let sphere = || ModelKind::RoundSphere {
            radius: self.radius.unwrap_or(if self.kind == "cp1" { 0.5 } else { 1.0 }),
        };
        Ok(match self.kind.as_str() {
            "cp1" | "sphere" | "round-sphere" => sphere(),
            "torus" | "flat-torus" => ModelKind::FlatTorus { periods: periods() },
            "twisted" | "twisted-flat" => {
                let p = periods();
                match &self.connection {
                    Some(rows) => {
                        let d = p.len();
                        let connection = rows
                            .iter()
                            .map(|r| {
                                if r.len() != d * d {
                                    return Err(Error::Config(format!(
                                        "connection component with {} entries, expected {}",
                                        r.len(),
                                        d * d
                                    )));
                                }
                                UnAlgebraElement::new(DMatrix::from_row_slice(d, d, r))
                                    .map_err(|e| Error::Config(e.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        ModelKind::TwistedFlat {
                            periods: p,
                            connection,
                        }
                    }
                    None => match ModelKind::random_twisted(p.len() / 2, self.seed.unwrap_or(7)) {
                        ModelKind::TwistedFlat { connection, .. } => ModelKind::TwistedFlat {
                            periods: p,
                            connection,
                        },
                        _ => unreachable!(),
                    },
                }
            }
            "sampled-sphere" => ModelKind::SampledGrid {
                base: Box::new(sphere()),
            },
            "sampled-torus" => ModelKind::SampledGrid {
                base: Box::new(ModelKind::FlatTorus { periods: periods() }),
            },
            other => return Err(Error::Config(format!("unknown model kind '{other}'"))),
        })
    }
}
